//! Instruction encoding: `[opcode, a, b, c, imm32 LE]`, eight bytes per instruction.
//!
//! Operand bytes name registers 0..=15. `NO_REG` in a load/store base slot means
//! "absolute address", and in the last source slot of an ALU op or CMP it selects
//! the immediate.

pub const INSTR_SIZE: u32 = 8;
pub const NO_REG: u8 = 0xFF;

pub const SP: u8 = 13;
pub const LR: u8 = 14;
pub const PC: u8 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Op {
    Movi = 0x01,
    Mov = 0x02,
    Ldb = 0x03,
    Ldh = 0x04,
    Ldw = 0x05,
    Stb = 0x06,
    Sth = 0x07,
    Stw = 0x08,
    Add = 0x10,
    Sub = 0x11,
    Mul = 0x12,
    And = 0x13,
    Or = 0x14,
    Xor = 0x15,
    Shl = 0x16,
    Shr = 0x17,
    Cmp = 0x18,
    Beq = 0x20,
    Bne = 0x21,
    Blt = 0x22,
    Bge = 0x23,
    Jmp = 0x24,
    Call = 0x25,
    Callr = 0x26,
    Ret = 0x27,
    Jmpr = 0x28,
    Halt = 0xFF,
}

const ALL: &[Op] = &[
    Op::Movi,
    Op::Mov,
    Op::Ldb,
    Op::Ldh,
    Op::Ldw,
    Op::Stb,
    Op::Sth,
    Op::Stw,
    Op::Add,
    Op::Sub,
    Op::Mul,
    Op::And,
    Op::Or,
    Op::Xor,
    Op::Shl,
    Op::Shr,
    Op::Cmp,
    Op::Beq,
    Op::Bne,
    Op::Blt,
    Op::Bge,
    Op::Jmp,
    Op::Call,
    Op::Callr,
    Op::Ret,
    Op::Jmpr,
    Op::Halt,
];

impl Op {
    pub fn from_byte(b: u8) -> Option<Op> {
        ALL.iter().copied().find(|op| *op as u8 == b)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Op::Movi => "MOVI",
            Op::Mov => "MOV",
            Op::Ldb => "LDB",
            Op::Ldh => "LDH",
            Op::Ldw => "LDW",
            Op::Stb => "STB",
            Op::Sth => "STH",
            Op::Stw => "STW",
            Op::Add => "ADD",
            Op::Sub => "SUB",
            Op::Mul => "MUL",
            Op::And => "AND",
            Op::Or => "OR",
            Op::Xor => "XOR",
            Op::Shl => "SHL",
            Op::Shr => "SHR",
            Op::Cmp => "CMP",
            Op::Beq => "BEQ",
            Op::Bne => "BNE",
            Op::Blt => "BLT",
            Op::Bge => "BGE",
            Op::Jmp => "JMP",
            Op::Call => "CALL",
            Op::Callr => "CALLR",
            Op::Ret => "RET",
            Op::Jmpr => "JMPR",
            Op::Halt => "HALT",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Op> {
        let up = s.to_ascii_uppercase();
        ALL.iter().copied().find(|op| op.mnemonic() == up)
    }

    /// Access width in bytes for loads and stores.
    pub fn width(self) -> Option<u32> {
        match self {
            Op::Ldb | Op::Stb => Some(1),
            Op::Ldh | Op::Sth => Some(2),
            Op::Ldw | Op::Stw => Some(4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instr {
    pub op: Op,
    pub a: u8,
    pub b: u8,
    pub c: u8,
    pub imm: u32,
}

impl Instr {
    pub fn new(op: Op, a: u8, b: u8, c: u8, imm: u32) -> Self {
        Instr { op, a, b, c, imm }
    }

    pub fn encode(&self) -> [u8; 8] {
        let i = self.imm.to_le_bytes();
        [self.op as u8, self.a, self.b, self.c, i[0], i[1], i[2], i[3]]
    }

    /// `None` for an unknown opcode or a register operand out of range.
    pub fn decode(bytes: &[u8; 8]) -> Option<Instr> {
        let op = Op::from_byte(bytes[0])?;
        let ins = Instr {
            op,
            a: bytes[1],
            b: bytes[2],
            c: bytes[3],
            imm: u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]),
        };
        let reg = |r: u8| r < 16;
        let reg_or_none = |r: u8| r < 16 || r == NO_REG;
        let ok = match op {
            Op::Movi | Op::Callr | Op::Jmpr => reg(ins.a),
            Op::Mov => reg(ins.a) && reg(ins.b),
            Op::Ldb | Op::Ldh | Op::Ldw | Op::Stb | Op::Sth | Op::Stw => {
                reg(ins.a) && reg_or_none(ins.b)
            }
            Op::Add | Op::Sub | Op::Mul | Op::And | Op::Or | Op::Xor | Op::Shl | Op::Shr => {
                reg(ins.a) && reg(ins.b) && reg_or_none(ins.c)
            }
            Op::Cmp => reg(ins.a) && reg_or_none(ins.b),
            Op::Beq | Op::Bne | Op::Blt | Op::Bge | Op::Jmp | Op::Call | Op::Ret | Op::Halt => true,
        };
        ok.then_some(ins)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode() {
        let i = Instr::new(Op::Ldw, 0, NO_REG, 0, 0x4000_0000);
        assert_eq!(i.encode(), [0x05, 0, 0xFF, 0, 0, 0, 0, 0x40]);
        assert_eq!(Instr::decode(&i.encode()), Some(i));
        assert_eq!(Instr::decode(&[0; 8]), None);
        assert_eq!(Instr::decode(&[0x02, 16, 0, 0, 0, 0, 0, 0]), None);
    }

    #[test]
    fn every_opcode_round_trips() {
        for op in ALL {
            assert_eq!(Op::from_byte(*op as u8), Some(*op));
            assert_eq!(Op::from_mnemonic(&op.mnemonic().to_lowercase()), Some(*op));
        }
    }
}
