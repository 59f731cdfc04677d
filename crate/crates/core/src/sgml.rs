//! WMT-style SGML test sets: `<tstset>` / `<srcset>` / `<refset>` wrapping
//! `<doc>` blocks of `<seg>` lines.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetKind {
    Src,
    Ref,
    Tst,
}

impl SetKind {
    pub fn tag(self) -> &'static str {
        match self {
            SetKind::Src => "srcset",
            SetKind::Ref => "refset",
            SetKind::Tst => "tstset",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "srcset" => Some(SetKind::Src),
            "refset" => Some(SetKind::Ref),
            "tstset" => Some(SetKind::Tst),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SgmlDoc {
    pub docid: String,
    /// Attributes after `docid`, in file order (e.g. `sysid`, `origlang`).
    pub extra: Vec<(String, String)>,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SgmlDocument {
    pub kind: SetKind,
    pub setid: String,
    pub srclang: String,
    pub trglang: Option<String>,
    pub docs: Vec<SgmlDoc>,
}

impl SgmlDocument {
    /// A single-document set with segments numbered from 1.
    pub fn from_lines<S: AsRef<str>>(
        kind: SetKind,
        setid: &str,
        srclang: &str,
        trglang: Option<&str>,
        docid: &str,
        lines: &[S],
    ) -> Self {
        SgmlDocument {
            kind,
            setid: setid.to_string(),
            srclang: srclang.to_string(),
            trglang: trglang.map(str::to_string),
            docs: vec![SgmlDoc {
                docid: docid.to_string(),
                extra: Vec::new(),
                segments: lines
                    .iter()
                    .enumerate()
                    .map(|(i, l)| Segment {
                        id: (i + 1).to_string(),
                        text: l.as_ref().to_string(),
                    })
                    .collect(),
            }],
        }
    }

    pub fn segment_count(&self) -> usize {
        self.docs.iter().map(|d| d.segments.len()).sum()
    }

    /// `(docid, segment)` in document order.
    pub fn segments(&self) -> impl Iterator<Item = (&str, &Segment)> {
        self.docs
            .iter()
            .flat_map(|d| d.segments.iter().map(move |s| (d.docid.as_str(), s)))
    }

    pub fn texts(&self) -> Vec<String> {
        self.segments().map(|(_, s)| s.text.clone()).collect()
    }

    /// Same structure with each segment text replaced, in order.
    pub fn with_texts(&self, kind: SetKind, trglang: Option<&str>, texts: &[String]) -> Result<Self> {
        if texts.len() != self.segment_count() {
            return Err(Error::contract(format!(
                "{} texts for {} segments",
                texts.len(),
                self.segment_count()
            )));
        }
        let mut out = self.clone();
        out.kind = kind;
        if let Some(t) = trglang {
            out.trglang = Some(t.to_string());
        }
        let mut it = texts.iter();
        for doc in &mut out.docs {
            for seg in &mut doc.segments {
                seg.text = it.next().expect("counted").clone();
            }
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        for doc in &self.docs {
            let mut seen = HashSet::new();
            for seg in &doc.segments {
                if !seen.insert(seg.id.as_str()) {
                    return Err(Error::contract(format!(
                        "duplicate segment id {} in doc {}",
                        seg.id, doc.docid
                    )));
                }
                if seg.text.contains(['\n', '\r']) {
                    return Err(Error::contract(format!(
                        "segment {} in doc {} contains a line break",
                        seg.id, doc.docid
                    )));
                }
            }
        }
        Ok(())
    }
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            _ => escape_text(c.encode_utf8(&mut [0; 4]), out),
        }
    }
}

fn write_attr(out: &mut String, name: &str, value: &str) {
    let _ = write!(out, " {name}=\"");
    escape_attr(value, out);
    out.push('"');
}

pub fn to_sgml_string(doc: &SgmlDocument) -> Result<String> {
    doc.validate()?;
    let mut out = String::new();
    let _ = write!(out, "<{}", doc.kind.tag());
    write_attr(&mut out, "setid", &doc.setid);
    write_attr(&mut out, "srclang", &doc.srclang);
    if let Some(t) = &doc.trglang {
        write_attr(&mut out, "trglang", t);
    }
    out.push_str(">\n");
    for d in &doc.docs {
        out.push_str("  <doc");
        write_attr(&mut out, "docid", &d.docid);
        for (k, v) in &d.extra {
            write_attr(&mut out, k, v);
        }
        out.push_str(">\n");
        for s in &d.segments {
            out.push_str("    <seg");
            write_attr(&mut out, "id", &s.id);
            out.push('>');
            escape_text(&s.text, &mut out);
            out.push_str("</seg>\n");
        }
        out.push_str("  </doc>\n");
    }
    let _ = writeln!(out, "</{}>", doc.kind.tag());
    Ok(out)
}

pub fn write_sgml(doc: &SgmlDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_sgml_string(doc)?).map_err(|e| Error::io(path, e))
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn unescape(s: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find(['&', '<', '>']) {
        out.push_str(&rest[..i]);
        if !rest[i..].starts_with('&') {
            return Err(perr(line, format!("unescaped '{}' in text", &rest[i..i + 1])));
        }
        let end = rest[i..]
            .find(';')
            .ok_or_else(|| perr(line, "unterminated entity"))?;
        let name = &rest[i + 1..i + end];
        let ch = match name {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            _ => {
                let code = if let Some(hex) = name.strip_prefix("#x").or_else(|| name.strip_prefix("#X")) {
                    u32::from_str_radix(hex, 16).ok()
                } else if let Some(dec) = name.strip_prefix('#') {
                    dec.parse().ok()
                } else {
                    None
                };
                code.and_then(char::from_u32)
                    .ok_or_else(|| perr(line, format!("unknown entity &{name};")))?
            }
        };
        out.push(ch);
        rest = &rest[i + end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Parses `name attr="v" ...` from the inside of a start tag.
fn parse_tag(inner: &str, line: usize) -> Result<(String, Vec<(String, String)>)> {
    let inner = inner.trim();
    let name_end = inner.find(char::is_whitespace).unwrap_or(inner.len());
    let name = inner[..name_end].to_ascii_lowercase();
    let mut rest = inner[name_end..].trim_start();
    let mut attrs = Vec::new();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| perr(line, format!("attribute without value in <{name}>")))?;
        let key = rest[..eq].trim().to_ascii_lowercase();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(perr(line, format!("malformed attribute in <{name}>")));
        }
        let after = rest[eq + 1..].trim_start();
        let quote = after
            .chars()
            .next()
            .filter(|&c| c == '"' || c == '\'')
            .ok_or_else(|| perr(line, format!("unquoted value for {key}")))?;
        let close = after[1..]
            .find(quote)
            .ok_or_else(|| perr(line, format!("unterminated value for {key}")))?;
        attrs.push((key, unescape(&after[1..1 + close], line)?));
        rest = after[close + 2..].trim_start();
    }
    Ok((name, attrs))
}

fn take_attr(attrs: &mut Vec<(String, String)>, key: &str) -> Option<String> {
    let i = attrs.iter().position(|(k, _)| k == key)?;
    Some(attrs.remove(i).1)
}

pub fn parse_sgml_str(text: &str) -> Result<SgmlDocument> {
    let mut doc: Option<SgmlDocument> = None;
    let mut current: Option<SgmlDoc> = None;
    let mut closed = false;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        last_line = n;
        let line = raw.trim_start().trim_end_matches(['\r', '\n', ' ', '\t']);
        if line.is_empty() {
            continue;
        }
        if closed {
            return Err(perr(n, "content after closing set tag"));
        }
        if !line.starts_with('<') {
            return Err(perr(n, "expected a tag"));
        }
        if line.starts_with("<seg") && line.as_bytes().get(4).is_some_and(|b| b.is_ascii_whitespace() || *b == b'>') {
            let d = current.as_mut().ok_or_else(|| perr(n, "<seg> outside <doc>"))?;
            let gt = line.find('>').ok_or_else(|| perr(n, "unterminated <seg> tag"))?;
            let body = line[gt + 1..]
                .strip_suffix("</seg>")
                .ok_or_else(|| perr(n, "<seg> must close with </seg> on the same line"))?;
            let (_, mut attrs) = parse_tag(&line[1..gt], n)?;
            let id = take_attr(&mut attrs, "id").ok_or_else(|| perr(n, "<seg> without id"))?;
            if d.segments.iter().any(|s| s.id == id) {
                return Err(perr(n, format!("duplicate segment id {id}")));
            }
            d.segments.push(Segment {
                id,
                text: unescape(body, n)?,
            });
            continue;
        }
        let inner = line
            .strip_prefix('<')
            .and_then(|l| l.strip_suffix('>'))
            .ok_or_else(|| perr(n, "tag must occupy its own line"))?;
        if let Some(close) = inner.strip_prefix('/') {
            match close.trim() {
                "doc" => {
                    let d = current.take().ok_or_else(|| perr(n, "</doc> without <doc>"))?;
                    doc.as_mut().expect("doc opened inside set").docs.push(d);
                }
                "p" => {}
                tag => {
                    let set = doc.as_ref().ok_or_else(|| perr(n, format!("</{tag}> before set tag")))?;
                    if tag != set.kind.tag() {
                        return Err(perr(n, format!("unexpected </{tag}>")));
                    }
                    if current.is_some() {
                        return Err(perr(n, "set closed inside <doc>"));
                    }
                    closed = true;
                }
            }
            continue;
        }
        let (name, mut attrs) = parse_tag(inner, n)?;
        match name.as_str() {
            "doc" => {
                if doc.is_none() {
                    return Err(perr(n, "<doc> before set tag"));
                }
                if current.is_some() {
                    return Err(perr(n, "nested <doc>"));
                }
                let docid = take_attr(&mut attrs, "docid").ok_or_else(|| perr(n, "<doc> without docid"))?;
                current = Some(SgmlDoc {
                    docid,
                    extra: attrs,
                    segments: Vec::new(),
                });
            }
            "p" | "hl" => {}
            tag => {
                let kind = SetKind::from_tag(tag).ok_or_else(|| perr(n, format!("unknown tag <{tag}>")))?;
                if doc.is_some() {
                    return Err(perr(n, "second set tag"));
                }
                doc = Some(SgmlDocument {
                    kind,
                    setid: take_attr(&mut attrs, "setid").ok_or_else(|| perr(n, "set tag without setid"))?,
                    srclang: take_attr(&mut attrs, "srclang").ok_or_else(|| perr(n, "set tag without srclang"))?,
                    trglang: take_attr(&mut attrs, "trglang"),
                    docs: Vec::new(),
                });
            }
        }
    }
    if current.is_some() {
        return Err(perr(last_line, "unclosed <doc>"));
    }
    let doc = doc.ok_or_else(|| perr(last_line.max(1), "no set tag found"))?;
    if !closed {
        return Err(perr(last_line, format!("missing </{}>", doc.kind.tag())));
    }
    Ok(doc)
}

pub fn parse_sgml(path: impl AsRef<Path>) -> Result<SgmlDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sgml_str(&text)
}

/// Cheap sniff used to pick plain-text vs SGML readers.
pub fn looks_like_sgml(text: &str) -> bool {
    let head = text.trim_start();
    ["<srcset", "<refset", "<tstset"].iter().any(|t| head.starts_with(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_segment_template() {
        let d = SgmlDocument::from_lines(SetKind::Tst, "S", "fi", Some("en"), "D", &["hello"]);
        let s = to_sgml_string(&d).unwrap();
        assert_eq!(
            s,
            "<tstset setid=\"S\" srclang=\"fi\" trglang=\"en\">\n  <doc docid=\"D\">\n    <seg id=\"1\">hello</seg>\n  </doc>\n</tstset>\n"
        );
        assert_eq!(s.lines().count(), 5);
        assert_eq!(parse_sgml_str(&s).unwrap(), d);
    }

    #[test]
    fn escapes_markup() {
        let d = SgmlDocument::from_lines(SetKind::Tst, "a\"b", "fi", Some("en"), "D", &["R&D <x> \"q\""]);
        let s = to_sgml_string(&d).unwrap();
        assert!(s.contains("R&amp;D &lt;x&gt; \"q\""));
        assert!(s.contains("setid=\"a&quot;b\""));
        assert_eq!(parse_sgml_str(&s).unwrap(), d);
    }

    #[test]
    fn reads_wmt_source_sets() {
        let text = "<srcset setid=\"newstest2018\" srclang=\"fi\">\n<doc sysid=\"ref\" docid=\"x-1\" genre=\"news\" origlang=\"fi\">\n<p>\n<seg id=\"1\">Hyvää  päivää&#39;</seg>\n</p>\n</doc>\n</srcset>\n";
        let d = parse_sgml_str(text).unwrap();
        assert_eq!(d.kind, SetKind::Src);
        assert_eq!(d.trglang, None);
        assert_eq!(d.docs[0].docid, "x-1");
        assert_eq!(d.docs[0].extra[0], ("sysid".to_string(), "ref".to_string()));
        assert_eq!(d.texts(), vec!["Hyvää  päivää'"]);
    }

    #[test]
    fn malformed_input_reports_line() {
        let cases = [
            ("<tstset setid=\"S\" srclang=\"fi\">\n  <doc docid=\"D\">\n    <seg id=\"1\">a</seg\n  </doc>\n</tstset>\n", 3),
            ("<tstset setid=\"S\" srclang=\"fi\">\n  <doc docid=\"D\">\n    <seg id=\"1\">a < b</seg>\n  </doc>\n</tstset>\n", 3),
            ("<tstset setid=\"S\" srclang=\"fi\">\n  <doc docid=\"D\">\n    <seg id=\"1\">a</seg>\n    <seg id=\"1\">b</seg>\n  </doc>\n</tstset>\n", 4),
            ("<tstset setid=\"S\" srclang=\"fi\">\n  <doc docid=\"D\">\n", 2),
            ("<tstset setid=\"S\">\n</tstset>\n", 1),
            ("hello\n", 1),
            ("<tstset setid=\"S\" srclang=\"fi\">\n  <seg id=\"1\">a</seg>\n</tstset>\n", 2),
        ];
        for (text, line) in cases {
            match parse_sgml_str(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn write_rejects_invalid_documents() {
        let mut d = SgmlDocument::from_lines(SetKind::Tst, "S", "fi", None, "D", &["a", "b"]);
        d.docs[0].segments[1].id = "1".into();
        assert!(to_sgml_string(&d).is_err());
        let d = SgmlDocument::from_lines(SetKind::Tst, "S", "fi", None, "D", &["a\nb"]);
        assert!(to_sgml_string(&d).is_err());
    }

    #[test]
    fn with_texts_keeps_structure() {
        let src = SgmlDocument::from_lines(SetKind::Src, "S", "fi", None, "D", &["a", "b"]);
        let out = src.with_texts(SetKind::Tst, Some("en"), &["x".into(), "y".into()]).unwrap();
        assert_eq!(out.kind, SetKind::Tst);
        assert_eq!(out.trglang.as_deref(), Some("en"));
        assert_eq!(out.texts(), vec!["x", "y"]);
        assert!(src.with_texts(SetKind::Tst, None, &["x".into()]).is_err());
    }

    fn arb_text() -> impl Strategy<Value = String> {
        "[a-zA-Zäö0-9 &<>\"';.,]{0,20}"
    }

    prop_compose! {
        fn arb_doc()(docid in "[a-z0-9._-]{1,8}", texts in prop::collection::vec(arb_text(), 0..5), sysid in prop::option::of("[a-z]{1,4}")) -> SgmlDoc {
            SgmlDoc {
                docid,
                extra: sysid.into_iter().map(|s| ("sysid".to_string(), s)).collect(),
                segments: texts.into_iter().enumerate().map(|(i, text)| Segment { id: (i + 1).to_string(), text }).collect(),
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(kind in prop::sample::select(vec![SetKind::Src, SetKind::Ref, SetKind::Tst]),
                      setid in arb_text(), trglang in prop::option::of("[a-z]{2}"),
                      docs in prop::collection::vec(arb_doc(), 0..4)) {
            let d = SgmlDocument { kind, setid, srclang: "fi".into(), trglang, docs };
            let s = to_sgml_string(&d).unwrap();
            prop_assert_eq!(parse_sgml_str(&s).unwrap(), d);
        }
    }
}
