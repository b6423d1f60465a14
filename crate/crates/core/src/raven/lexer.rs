use super::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Integer literal: value plus its suffix flags.
    Int {
        value: u64,
        hex: bool,
        unsigned: bool,
        long: bool,
    },
    Str(String),
    Punct(&'static str),
    /// Something the subset never accepts (`#`, char literals, floats, ...).
    Unsupported(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

// Longest first.
const PUNCTS: &[&str] = &[
    "...", "<<=", ">>=", "->", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<",
    ">>", "<=", ">=", "==", "!=", "&&", "||", "{", "}", "(", ")", "[", "]", ";", ",", "=", "+",
    "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "?", ":", ".",
];

pub fn tokenize(src: &str, origin: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let err = |line, col, msg: String| Diagnostic::new(origin, line, col, msg);

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let (sl, sc) = (line, col);
            i += 2;
            col += 2;
            loop {
                if i >= bytes.len() {
                    return Err(err(sl, sc, "unterminated block comment".into()));
                }
                if src[i..].starts_with("*/") {
                    i += 2;
                    col += 2;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            continue;
        }

        let (tl, tc) = (line, col);
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else if c.is_ascii_digit() {
            lex_number(src, &mut i).map_err(|m| err(tl, tc, m))?
        } else if c == b'"' {
            i += 1;
            let mut s = String::new();
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => {
                        return Err(err(tl, tc, "unterminated string literal".into()))
                    }
                    Some(b'"') => {
                        i += 1;
                        break;
                    }
                    Some(b'\\') => {
                        let esc = bytes.get(i + 1).copied();
                        match esc {
                            Some(b'"') => s.push('"'),
                            Some(b'\\') => s.push('\\'),
                            Some(b'n') => s.push('\n'),
                            _ => {
                                return Err(err(tl, tc, "unsupported escape in string literal".into()))
                            }
                        }
                        i += 2;
                    }
                    Some(_) => {
                        let ch = src[i..].chars().next().unwrap_or('\u{fffd}');
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            Tok::Str(s)
        } else if c == b'\'' {
            i += 1;
            while i < bytes.len() && bytes[i] != b'\'' && bytes[i] != b'\n' {
                i += 1;
            }
            i = (i + 1).min(bytes.len());
            Tok::Unsupported("character literal")
        } else if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            Tok::Unsupported("preprocessor directive")
        } else if let Some(p) = PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            i += p.len();
            Tok::Punct(p)
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(err(tl, tc, format!("unexpected character `{ch}`")));
        };
        col += src[start..i].chars().count();
        out.push(Token {
            tok,
            line: tl,
            col: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

fn lex_number(src: &str, i: &mut usize) -> Result<Tok, String> {
    let bytes = src.as_bytes();
    let start = *i;
    let hex = src[start..].starts_with("0x") || src[start..].starts_with("0X");
    let digits_start = if hex { start + 2 } else { start };
    let mut j = digits_start;
    while j < bytes.len() && (bytes[j].is_ascii_hexdigit() && (hex || bytes[j].is_ascii_digit())) {
        j += 1;
    }
    if j < bytes.len() && (bytes[j] == b'.' || (!hex && (bytes[j] == b'e' || bytes[j] == b'E'))) {
        *i = j + 1;
        while *i < bytes.len() && bytes[*i].is_ascii_alphanumeric() {
            *i += 1;
        }
        return Ok(Tok::Unsupported("floating-point literal"));
    }
    let digits = &src[digits_start..j];
    if digits.is_empty() {
        return Err("malformed integer literal".into());
    }
    let radix = if hex { 16 } else { 10 };
    if !hex && digits.len() > 1 && digits.starts_with('0') {
        return Err("octal literals are not supported".into());
    }
    let value = u64::from_str_radix(digits, radix)
        .map_err(|_| format!("integer literal `{}` does not fit in 64 bits", &src[start..j]))?;
    let (mut unsigned, mut long) = (false, false);
    while j < bytes.len() {
        match bytes[j] {
            b'u' | b'U' if !unsigned => unsigned = true,
            b'l' | b'L' => long = true,
            _ => break,
        }
        j += 1;
    }
    if j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
        return Err(format!("invalid suffix on integer literal `{}`", &src[start..=j]));
    }
    *i = j;
    Ok(Tok::Int {
        value,
        hex,
        unsigned,
        long,
    })
}
