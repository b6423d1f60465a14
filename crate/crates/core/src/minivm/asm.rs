//! Two-pass assembler for the minivm ISA.
//!
//! One statement per line; `;` starts a comment. Directives:
//! `.base`, `.entry`, `.handler`, `.period`, `.ram`, `.org`, `.align`, `.equ`,
//! `.word`, `.byte`, `.ascii`. Operand expressions are sums of numbers, labels
//! and `.equ` names, e.g. `[r1+BUF+4]` or `#END-START`.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::image::TargetImage;
use super::isa::{Instr, Op, NO_REG};
use super::ROM_ALIAS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct AsmError {
    pub line: usize,
    pub message: String,
}

const DEFAULT_RAM: u32 = 0x1000;

enum Item {
    Instr(Op, Vec<String>),
    Word(Vec<String>),
    Byte(Vec<String>),
    Ascii(Vec<u8>),
}

struct Placed {
    line: usize,
    offset: u32,
    item: Item,
}

pub fn assemble(source: &str) -> Result<TargetImage, AsmError> {
    assemble_with_labels(source).map(|(image, _)| image)
}

/// Like [`assemble`], also returning every label's absolute address.
pub fn assemble_with_labels(source: &str) -> Result<(TargetImage, BTreeMap<String, u32>), AsmError> {
    let mut labels = BTreeMap::new();
    let mut base = 0u32;
    let mut offset = 0u32;
    let mut symbols: HashMap<String, i64> = HashMap::new();
    let mut placed = Vec::new();
    let mut entry: Option<(usize, String)> = None;
    let mut handler: Option<(usize, String)> = None;
    let mut period: Option<(usize, String)> = None;
    let mut ram: Option<(usize, String)> = None;
    let mut equs: Vec<(usize, String, String)> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let err = |m: String| AsmError { line, message: m };
        let mut text = strip_comment(raw).trim();
        while let Some(colon) = label_end(text) {
            let name = text[..colon].trim();
            if !is_ident(name) {
                return Err(err(format!("bad label `{name}`")));
            }
            if symbols.insert(name.to_string(), (base + offset) as i64).is_some() {
                return Err(err(format!("duplicate label `{name}`")));
            }
            labels.insert(name.to_string(), base + offset);
            text = text[colon + 1..].trim();
        }
        if text.is_empty() {
            continue;
        }
        let (head, rest) = match text.find(char::is_whitespace) {
            Some(i) => (&text[..i], text[i..].trim()),
            None => (text, ""),
        };
        let args = split_args(rest);
        let lower = head.to_ascii_lowercase();
        match lower.as_str() {
            ".base" => {
                if !placed.is_empty() || offset != 0 {
                    return Err(err(".base must precede code".into()));
                }
                base = match parse_number(rest) {
                    Some(0) => 0,
                    Some(v) if v == ROM_ALIAS as i64 => ROM_ALIAS,
                    _ => return Err(err(format!(".base must be 0 or {ROM_ALIAS:#x}"))),
                };
            }
            ".entry" => entry = Some((line, rest.to_string())),
            ".handler" => handler = Some((line, rest.to_string())),
            ".period" => period = Some((line, rest.to_string())),
            ".ram" => ram = Some((line, rest.to_string())),
            ".equ" => {
                if args.len() != 2 || !is_ident(&args[0]) {
                    return Err(err(".equ expects NAME, value".into()));
                }
                equs.push((line, args[0].clone(), args[1].clone()));
            }
            ".org" => {
                let target = parse_number(rest).ok_or_else(|| err("bad .org address".into()))?;
                let target = target - base as i64;
                if target < offset as i64 {
                    return Err(err(format!(".org {rest} moves backwards")));
                }
                offset = target as u32;
            }
            ".align" => {
                let n = parse_number(rest).filter(|n| *n > 0).ok_or_else(|| err("bad .align".into()))?;
                offset = offset.div_ceil(n as u32) * n as u32;
            }
            ".word" => {
                placed.push(Placed { line, offset, item: Item::Word(args.clone()) });
                offset += 4 * args.len() as u32;
            }
            ".byte" => {
                placed.push(Placed { line, offset, item: Item::Byte(args.clone()) });
                offset += args.len() as u32;
            }
            ".ascii" => {
                let s = rest
                    .strip_prefix('"')
                    .and_then(|s| s.strip_suffix('"'))
                    .ok_or_else(|| err(".ascii expects a quoted string".into()))?;
                let bytes = s.as_bytes().to_vec();
                offset += bytes.len() as u32;
                placed.push(Placed { line, offset: offset - bytes.len() as u32, item: Item::Ascii(bytes) });
            }
            _ if lower.starts_with('.') => return Err(err(format!("unknown directive `{head}`"))),
            _ => {
                let op = Op::from_mnemonic(head).ok_or_else(|| err(format!("unknown mnemonic `{head}`")))?;
                placed.push(Placed { line, offset, item: Item::Instr(op, args) });
                offset += 8;
            }
        }
    }

    for (line, name, value) in &equs {
        let v = eval(value, &symbols).map_err(|m| AsmError { line: *line, message: m })?;
        if symbols.insert(name.clone(), v).is_some() {
            return Err(AsmError { line: *line, message: format!("duplicate symbol `{name}`") });
        }
    }

    let mut rom = vec![0u8; offset as usize];
    for p in &placed {
        let err = |m: String| AsmError { line: p.line, message: m };
        let at = p.offset as usize;
        match &p.item {
            Item::Instr(op, args) => {
                let addr = base + p.offset;
                let ins = encode(*op, args, addr, &symbols).map_err(err)?;
                rom[at..at + 8].copy_from_slice(&ins.encode());
            }
            Item::Word(args) => {
                for (i, a) in args.iter().enumerate() {
                    let v = eval(a, &symbols).map_err(err)? as u32;
                    rom[at + 4 * i..at + 4 * i + 4].copy_from_slice(&v.to_le_bytes());
                }
            }
            Item::Byte(args) => {
                for (i, a) in args.iter().enumerate() {
                    rom[at + i] = eval(a, &symbols).map_err(err)? as u8;
                }
            }
            Item::Ascii(bytes) => rom[at..at + bytes.len()].copy_from_slice(bytes),
        }
    }

    let resolve = |d: &Option<(usize, String)>| -> Result<Option<u32>, AsmError> {
        match d {
            None => Ok(None),
            Some((line, expr)) => eval(expr, &symbols)
                .map(|v| Some(v as u32))
                .map_err(|m| AsmError { line: *line, message: m }),
        }
    };
    let image = TargetImage {
        rom,
        entry: resolve(&entry)?.unwrap_or(base),
        handler: resolve(&handler)?,
        period: resolve(&period)?,
        ram_size: resolve(&ram)?.unwrap_or(DEFAULT_RAM),
    };
    image.validate().map_err(|e| AsmError { line: 0, message: e.to_string() })?;
    Ok((image, labels))
}

fn strip_comment(s: &str) -> &str {
    let mut in_str = false;
    for (i, c) in s.char_indices() {
        match c {
            '"' => in_str = !in_str,
            ';' if !in_str => return &s[..i],
            _ => {}
        }
    }
    s
}

fn label_end(s: &str) -> Option<usize> {
    let i = s.find(':')?;
    is_ident(s[..i].trim()).then_some(i)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn split_args(s: &str) -> Vec<String> {
    if s.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur.trim().to_string());
    out
}

fn parse_number(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, s) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let v = if let Some(h) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        i64::from_str_radix(&h.replace('_', ""), 16).ok()?
    } else if let Some(b) = s.strip_prefix("0b") {
        i64::from_str_radix(&b.replace('_', ""), 2).ok()?
    } else if s.len() == 3 && s.starts_with('\'') && s.ends_with('\'') {
        s.as_bytes()[1] as i64
    } else {
        s.replace('_', "").parse().ok()?
    };
    Some(if neg { -v } else { v })
}

/// Sum of `+`/`-` separated terms.
fn eval(expr: &str, symbols: &HashMap<String, i64>) -> Result<i64, String> {
    let expr = expr.trim().trim_start_matches('#').trim();
    if expr.is_empty() {
        return Err("missing operand".into());
    }
    let mut total = 0i64;
    let mut sign = 1i64;
    let mut term = String::new();
    let flush = |term: &mut String, sign: i64, total: &mut i64| -> Result<(), String> {
        let t = term.trim();
        if t.is_empty() {
            return Err(format!("malformed expression `{expr}`"));
        }
        let v = parse_number(t)
            .or_else(|| symbols.get(t).copied())
            .ok_or_else(|| format!("undefined symbol `{t}`"))?;
        *total = total.wrapping_add(sign * v);
        term.clear();
        Ok(())
    };
    for (i, c) in expr.char_indices() {
        if (c == '+' || c == '-') && !term.trim().is_empty() {
            flush(&mut term, sign, &mut total)?;
            sign = if c == '+' { 1 } else { -1 };
        } else if c == '-' && i == 0 {
            sign = -1;
        } else {
            term.push(c);
        }
    }
    flush(&mut term, sign, &mut total)?;
    Ok(total)
}

fn reg(s: &str) -> Result<u8, String> {
    let l = s.trim().to_ascii_lowercase();
    match l.as_str() {
        "sp" => return Ok(13),
        "lr" => return Ok(14),
        "pc" => return Ok(15),
        _ => {}
    }
    l.strip_prefix('r')
        .and_then(|n| n.parse::<u8>().ok())
        .filter(|n| *n < 16)
        .ok_or_else(|| format!("expected register, found `{s}`"))
}

fn is_reg(s: &str) -> bool {
    reg(s).is_ok()
}

/// `[base+expr]`, `[base]` or `[expr]`.
fn mem_operand(s: &str, symbols: &HashMap<String, i64>) -> Result<(u8, u32), String> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| format!("expected memory operand, found `{s}`"))?
        .trim();
    let split = inner.find(['+', '-']).filter(|i| *i > 0);
    let (head, tail) = match split {
        Some(i) => (&inner[..i], &inner[i..]),
        None => (inner, ""),
    };
    if is_reg(head) {
        let off = if tail.is_empty() { 0 } else { eval(&format!("0{tail}"), symbols)? };
        Ok((reg(head)?, off as u32))
    } else {
        Ok((NO_REG, eval(inner, symbols)? as u32))
    }
}

fn encode(op: Op, args: &[String], addr: u32, symbols: &HashMap<String, i64>) -> Result<Instr, String> {
    let want = |n: usize| -> Result<(), String> {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("{} expects {n} operand(s), got {}", op.mnemonic(), args.len()))
        }
    };
    let imm = |s: &str| eval(s, symbols).map(|v| v as u32);
    Ok(match op {
        Op::Movi => {
            want(2)?;
            Instr::new(op, reg(&args[0])?, 0, 0, imm(&args[1])?)
        }
        Op::Mov => {
            want(2)?;
            Instr::new(op, reg(&args[0])?, reg(&args[1])?, 0, 0)
        }
        Op::Ldb | Op::Ldh | Op::Ldw | Op::Stb | Op::Sth | Op::Stw => {
            want(2)?;
            let (base, off) = mem_operand(&args[1], symbols)?;
            Instr::new(op, reg(&args[0])?, base, 0, off)
        }
        Op::Add | Op::Sub | Op::Mul | Op::And | Op::Or | Op::Xor | Op::Shl | Op::Shr => {
            want(3)?;
            let (c, i) = if is_reg(&args[2]) { (reg(&args[2])?, 0) } else { (NO_REG, imm(&args[2])?) };
            Instr::new(op, reg(&args[0])?, reg(&args[1])?, c, i)
        }
        Op::Cmp => {
            want(2)?;
            let (b, i) = if is_reg(&args[1]) { (reg(&args[1])?, 0) } else { (NO_REG, imm(&args[1])?) };
            Instr::new(op, reg(&args[0])?, b, 0, i)
        }
        Op::Beq | Op::Bne | Op::Blt | Op::Bge => {
            want(1)?;
            Instr::new(op, 0, 0, 0, imm(&args[0])?.wrapping_sub(addr))
        }
        Op::Jmp | Op::Call => {
            want(1)?;
            Instr::new(op, 0, 0, 0, imm(&args[0])?)
        }
        Op::Callr | Op::Jmpr => {
            want(1)?;
            Instr::new(op, reg(&args[0])?, 0, 0, 0)
        }
        Op::Ret | Op::Halt => {
            want(0)?;
            Instr::new(op, 0, 0, 0, 0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_branches() {
        let img = assemble(
            "; demo\n.entry start\nstart: MOVI r0, #1\nloop: BNE loop\n  HALT\n.word start, 0x11223344\n.byte 7\n",
        )
        .unwrap();
        assert_eq!(img.entry, 0);
        assert_eq!(&img.rom[0..8], &[0x01, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&img.rom[8..16], &[0x21, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&img.rom[24..28], &[0, 0, 0, 0]);
        assert_eq!(&img.rom[28..32], &[0x44, 0x33, 0x22, 0x11]);
        assert_eq!(img.rom[32], 7);
    }

    #[test]
    fn memory_operands() {
        let img = assemble(".equ BUF, 0x20000010\nLDW r0, [0x40000000]\nSTB r1, [sp-4]\nLDW r2, [r3+BUF+4]\nHALT").unwrap();
        assert_eq!(&img.rom[0..8], &[0x05, 0, 0xFF, 0, 0, 0, 0, 0x40]);
        assert_eq!(&img.rom[8..16], &[0x06, 1, 13, 0, 0xFC, 0xFF, 0xFF, 0xFF]);
        assert_eq!(&img.rom[16..24], &[0x05, 2, 3, 0, 0x14, 0, 0, 0x20]);
    }

    #[test]
    fn base_and_org() {
        let img = assemble(".base 0x08000000\n.entry main\n.org 0x08000100\nmain: JMP main\n").unwrap();
        assert_eq!(img.entry, 0x0800_0100);
        assert_eq!(img.rom.len(), 0x108);
        assert_eq!(&img.rom[0x100..0x108], &[0x24, 0, 0, 0, 0x00, 0x01, 0x00, 0x08]);
    }

    #[test]
    fn errors_name_line() {
        let e = assemble("HALT\nFOO r1\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = assemble("JMP nowhere\n").unwrap_err();
        assert!(e.message.contains("undefined symbol"));
    }
}
